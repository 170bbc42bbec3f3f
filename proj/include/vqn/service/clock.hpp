#pragma once

#include <atomic>
#include <chrono>
#include <thread>

namespace vqn::service {

/// Wall-clock seconds since the Unix epoch. Injectable so tests can
/// drive expiry and retry backoff without sleeping.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now() const = 0;
    virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
public:
    double now() const override {
        using namespace std::chrono;
        return duration<double>(system_clock::now().time_since_epoch()).count();
    }
    void sleep_for(double seconds) override {
        if (seconds > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        }
    }
};

/// Time only moves when told to; sleeping advances it instantly.
class ManualClock final : public Clock {
public:
    explicit ManualClock(double start = 1'700'000'000.0) : now_(start) {}

    double now() const override { return now_.load(); }
    void sleep_for(double seconds) override { advance(seconds); }
    void advance(double seconds) {
        double cur = now_.load();
        while (!now_.compare_exchange_weak(cur, cur + seconds)) {
        }
    }

private:
    std::atomic<double> now_;
};

} // namespace vqn::service
