#ifndef FLUIDQ_SCENARIO_HPP
#define FLUIDQ_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace fluidq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

struct RunOptions {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    std::optional<double> dt_override;
};

// Executes the scenario file in the given mode, writing CSV/JSON artifacts under
// out_dir and a human-readable summary to `log`.  Returns the process exit code
// (0 ok, 1 numerical abort, 2 configuration error); never throws.
int run_scenario(const std::string& mode, const std::string& scenario_path,
                 const RunOptions& opts, std::ostream& log);

}  // namespace fluidq

#endif
