// SPDX-License-Identifier: Apache-2.0
#include <evrad/cli.hpp>

int main(int argc, char** argv) { return evrad::cli::run(argc, argv); }
