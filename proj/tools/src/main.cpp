#include "surme/cli.hpp"

int main(int argc, char** argv) { return surme::cli::cli_main(argc, argv); }
