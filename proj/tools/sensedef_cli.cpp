#include "sensedef/cli.hpp"

int main(int argc, char** argv) { return sensedef::cli::run(argc, argv); }
