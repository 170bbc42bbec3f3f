#pragma once

#include "vqn/photon_source.hpp"
#include "vqn/service/config.hpp"

#include <cstdint>
#include <memory>

namespace vqn::service {

/// The hardware side of a measurement: delivers tag streams for the two
/// channels of a pair over an acquisition window.
class Backend {
public:
    virtual ~Backend() = default;
    /// `acquisition` numbers the request so repeated runs are reproducible.
    virtual ChannelStreams acquire(ChannelIndex signal, ChannelIndex idler, double duration_s,
                                   std::uint64_t acquisition) = 0;
};

/// Synthesizes streams with photon_source from the configured pairs.
class VirtualBackend final : public Backend {
public:
    explicit VirtualBackend(SourceConfig source);
    ChannelStreams acquire(ChannelIndex signal, ChannelIndex idler, double duration_s,
                           std::uint64_t acquisition) override;

private:
    SourceConfig source_;
};

/// Attachment point for a real instrument driver; always unavailable.
class StubBackend final : public Backend {
public:
    ChannelStreams acquire(ChannelIndex signal, ChannelIndex idler, double duration_s,
                           std::uint64_t acquisition) override;
};

std::unique_ptr<Backend> make_backend(const ServiceConfig& config);

} // namespace vqn::service
