#include "compopt/cli.hpp"

int main(int argc, char** argv) { return compopt::cli_main(argc, argv); }
