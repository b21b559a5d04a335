// SPDX-License-Identifier: MIT
#include "ivsurf/bench.hpp"

int main(int argc, char** argv) { return ivsurf::run_cli(argc, argv); }
