#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

namespace mpmrf::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNumericalFailure = 3 };

struct Invocation {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

int cmd_decluster(const Invocation& inv);
int cmd_fit(const Invocation& inv);
int cmd_aggregate(const Invocation& inv);
int cmd_allocate(const Invocation& inv);
int cmd_asymptotics(const Invocation& inv);

/// Parses `mpmrf <subcommand> --config path [--seed N] [--out dir]`.
int run(int argc, char** argv);

}  // namespace mpmrf::cli
