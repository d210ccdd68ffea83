#include "bangoff/cli.hpp"

int main(int argc, char** argv) { return bangoff::cli::run(argc, argv); }
