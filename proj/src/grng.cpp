#include "vibnn/grng.hpp"

#include <stdexcept>

namespace vibnn {

std::unique_ptr<GrnSource> make_grn_source(const std::string& name, uint64_t seed) {
    if (name == "rlf") return std::make_unique<RlfGrnSource>(seed);
    if (name == "wallace") return std::make_unique<WallaceRingSource>(seed);
    if (name == "software") return std::make_unique<SoftwareWallaceSource>(seed);
    if (name == "nss") return std::make_unique<WallaceNssSource>(seed);
    if (name == "reference") return std::make_unique<ReferenceGaussianSource>(seed);
    throw std::invalid_argument("unknown GRNG variant: " + name);
}

}  // namespace vibnn
