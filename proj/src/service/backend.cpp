#include "vqn/service/backend.hpp"

#include "vqn/error.hpp"
#include "vqn/random.hpp"

#include <algorithm>

namespace vqn::service {

VirtualBackend::VirtualBackend(SourceConfig source) : source_(std::move(source)) { source_.validate(); }

ChannelStreams VirtualBackend::acquire(ChannelIndex signal, ChannelIndex idler, double duration_s,
                                       std::uint64_t acquisition) {
    const auto it = std::find_if(source_.pairs.begin(), source_.pairs.end(),
                                 [&](const PairConfig& p) { return p.signal == signal && p.idler == idler; });
    if (it == source_.pairs.end()) {
        throw Error(ErrorCode::not_found, "no source pair on channels " + std::to_string(signal) + "/" +
                                              std::to_string(idler));
    }
    SourceConfig one{duration_s, {*it}, derive_seed(source_.seed, acquisition)};
    return generate(one);
}

ChannelStreams StubBackend::acquire(ChannelIndex, ChannelIndex, double, std::uint64_t) {
    throw Error(ErrorCode::unavailable, "no hardware backend is attached");
}

std::unique_ptr<Backend> make_backend(const ServiceConfig& config) {
    if (config.backend == BackendKind::stub) {
        return std::make_unique<StubBackend>();
    }
    return std::make_unique<VirtualBackend>(config.source);
}

} // namespace vqn::service
