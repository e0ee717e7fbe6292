#pragma once

namespace lawsde {

inline constexpr const char* kArtifactName = "lawsde";
inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace lawsde
