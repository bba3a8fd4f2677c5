#include "gpnas/cli.hpp"

int main(int argc, char** argv) { return gpnas::cli::run(argc, argv); }
