#include "raschdif/cli.hpp"

int main(int argc, char** argv) { return raschdif::cli::run(argc, argv); }
