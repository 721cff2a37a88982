#pragma once

namespace imitatio {

/// Entry point of the imitatio binary: analyze | sample | validate | walks.
/// Exit codes: 0 success, 2 invalid kernel file, 3 usage or precondition
/// failure, 4 statistical validation failure.
int run_cli(int argc, char** argv);

}  // namespace imitatio
