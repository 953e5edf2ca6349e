#pragma once

namespace interacte {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;        // bad flags, config or preconditions
inline constexpr int kExitData = 2;          // missing/corrupt data or checkpoint
inline constexpr int kExitNumeric = 3;       // non-finite loss or gradient
inline constexpr int kExitVerification = 4;  // a check the command performs failed
inline constexpr int kExitInternal = 5;

// interacte <train|eval|count|verify-props|ablate|gradcheck> [options]
int run_cli(int argc, const char* const* argv);

}  // namespace interacte
