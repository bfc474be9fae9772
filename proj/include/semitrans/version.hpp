#pragma once

namespace semitrans {

inline constexpr const char* version = "0.1.0";

} // namespace semitrans
