#pragma once

namespace allact {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kModules[] = {"tensor_nn", "policy",  "envs",    "critic",
                                           "estimators", "analysis", "trainer", "cli"};

}  // namespace allact
