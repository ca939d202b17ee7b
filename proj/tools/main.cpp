#include "drtrack/cli.hpp"

int main(int argc, char** argv) { return drtrack::cli::run_cli(argc, argv); }
