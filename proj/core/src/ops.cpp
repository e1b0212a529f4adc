// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/ops.hpp"

namespace fp8lab {

ActKind act_kind_by_name(const std::string& name) {
    if (name == "gelu") return ActKind::gelu;
    if (name == "silu") return ActKind::silu;
    if (name == "swiglu") return ActKind::swiglu;
    if (name == "smooth-swiglu" || name == "smooth_swiglu") return ActKind::smooth_swiglu;
    if (name == "xielu") return ActKind::xielu;
    if (name == "tanh-alpha" || name == "tanh_alpha") return ActKind::tanh_alpha;
    throw std::invalid_argument("unknown activation kind: " + name);
}

const char* to_string(ActKind k) {
    switch (k) {
        case ActKind::gelu: return "gelu";
        case ActKind::silu: return "silu";
        case ActKind::swiglu: return "swiglu";
        case ActKind::smooth_swiglu: return "smooth-swiglu";
        case ActKind::xielu: return "xielu";
        case ActKind::tanh_alpha: return "tanh-alpha";
    }
    return "?";
}

}  // namespace fp8lab
