#include "fbench/cli/app.hpp"

int main(int argc, char** argv) { return fbench::cli::run_cli(argc, argv); }
