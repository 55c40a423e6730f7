#include "ladr/cli.hpp"

int main(int argc, char** argv) { return ladr::cli::run_cli(argc, argv); }
