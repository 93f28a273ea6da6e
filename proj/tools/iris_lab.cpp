#include "irislab/cli.hpp"

int main(int argc, char** argv) { return irislab::cli::run(argc, argv); }
