#pragma once

#include "vqn/allocation.hpp"
#include "vqn/service/backend.hpp"
#include "vqn/service/clock.hpp"
#include "vqn/service/config.hpp"
#include "vqn/service/event_bus.hpp"
#include "vqn/service/journal.hpp"
#include "vqn/service/notifier.hpp"

#include <json.hpp>

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace vqn::service {

enum class RequestKind { channel_pair, measurement, release };
enum class RequestStatus { processing, processed, completed };

std::string_view to_string(RequestKind k) noexcept;
std::string_view to_string(RequestStatus s) noexcept;

struct StatusChange {
    RequestStatus status = RequestStatus::processing;
    double at = 0.0;
};

struct RequestRecord {
    std::string id;
    UserId user_id;
    RequestKind kind = RequestKind::channel_pair;
    RequestStatus status = RequestStatus::processing;
    double created_at = 0.0;
    double updated_at = 0.0;
    nlohmann::json payload = nlohmann::json::object();
    std::optional<std::string> result_ref;
    std::optional<PairId> pair_id;
    bool delivery_failed = false;
    int delivery_attempts = 0;
    std::vector<StatusChange> history;
};

struct ResourceRecord {
    PairId id = 0;
    ChannelIndex signal = 0;
    ChannelIndex idler = 0;
    double current_rate_hz = 0.0;
    std::optional<UserId> assignee;
    std::optional<double> since;
};

struct LoginResult {
    std::string token;
    double expires_at = 0.0;
};

struct QueuePosition {
    std::optional<int> position; // 1-based; absent when the caller is not waiting
    int waiting = 0;
};

struct ReleaseResult {
    PairId pair_id = 0;
    bool released = false; // false: repeat release, nothing changed
    std::optional<std::string> request_id;
};

/// Everything the service talks to. Unset members are built from the config.
struct ServiceDeps {
    std::shared_ptr<Clock> clock;
    std::unique_ptr<Journal> journal;
    std::unique_ptr<NotificationSink> sink;
    std::unique_ptr<Backend> backend;
};

/// The request lifecycle. All state changes go through the journal first
/// and are then applied; opening a service on an existing journal replays
/// it, so the reconstructed state is exactly what was persisted.
class Service {
public:
    explicit Service(ServiceConfig config, ServiceDeps deps = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    LoginResult login(const std::string& user, const std::string& secret);
    /// Resolves a bearer token to its user; throws unauthorized.
    UserId authenticate(const std::string& token) const;

    RequestRecord submit_pair_request(const std::string& token);
    RequestRecord request_status(const std::string& token, const std::string& request_id) const;
    std::vector<ResourceRecord> list_resources(const std::string& token) const;
    QueuePosition queue_position(const std::string& token) const;
    nlohmann::json run_measurement(const std::string& token, PairId pair, const std::string& function,
                                   const nlohmann::json& params);
    ReleaseResult release_pair(const std::string& token, PairId pair);

    /// One pass of the allocation worker over pending user_request events.
    /// Returns the number of assignments made.
    std::size_t run_allocation_cycle();
    /// One pass of the notifier over pending response events. Returns the
    /// number of requests completed.
    std::size_t run_notification_cycle();
    /// Runs both cycles until neither has pending work.
    void run_pending();

    /// Starts the allocation worker and notifier threads.
    void start();
    void stop();

    std::vector<ResourceRecord> resources() const;
    std::optional<RequestRecord> find_request(const std::string& request_id) const;
    /// Clock-independent view of the persisted state.
    nlohmann::json snapshot() const;
    std::vector<nlohmann::json> journal_entries() const;
    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct TokenInfo {
        UserId user;
        double expires_at = 0.0;
    };

    double now_locked();
    std::uint64_t record(nlohmann::json entry);
    void apply(const nlohmann::json& entry);
    UserSession* session_of(const UserId& user);
    const UserSession* session_of(const UserId& user) const;
    ChannelPairResource* resource_of(PairId pair);
    RequestRecord& request_ref(const std::string& id);
    void set_status(RequestRecord& r, RequestStatus s, double at);
    UserId authenticate_locked(const std::string& token) const;
    std::string next_request_id() const;
    ResourceRecord resource_view(const ChannelPairResource& r) const;

    ServiceConfig config_;
    std::shared_ptr<Clock> clock_;
    std::unique_ptr<Journal> journal_;
    std::unique_ptr<NotificationSink> sink_;
    std::unique_ptr<Backend> backend_;
    EventBus bus_;

    mutable std::mutex mu_;
    AllocationState state_;
    std::map<UserId, std::size_t> session_index_;
    std::map<std::string, RequestRecord> requests_;
    std::vector<std::string> request_order_;
    std::map<std::string, nlohmann::json> results_;
    std::map<UserId, PairId> last_released_;
    std::vector<nlohmann::json> dead_letters_;
    std::uint64_t acquisitions_ = 0;
    double last_time_ = 0.0;

    mutable std::mutex token_mu_;
    std::map<std::string, TokenInfo> tokens_;
    std::mt19937_64 token_rng_;

    std::mutex notify_mu_; // one notification pass at a time
    std::atomic<bool> running_{false};
    std::thread allocator_thread_;
    std::thread notifier_thread_;
};

nlohmann::json to_json(const RequestRecord& r);
nlohmann::json to_json(const ResourceRecord& r);
nlohmann::json to_json(const QueuePosition& q);

struct JournalAudit {
    bool injective = true;
    std::string violation;
    std::size_t assignments = 0;
    std::size_t max_concurrent = 0;
    std::size_t pair_requests = 0;
    std::size_t completed = 0;
    std::size_t delivery_failed = 0;
    bool statuses_monotone = true;
};

/// Replays assignment and release entries and checks that no pair ever
/// has two holders and no user ever holds two pairs.
JournalAudit audit_journal(const std::vector<nlohmann::json>& entries);

} // namespace vqn::service
