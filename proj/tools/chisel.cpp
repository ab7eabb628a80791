#include "chisel/cli.hpp"

int main(int argc, char** argv) { return chisel::cli::run_cli(argc, argv); }
