#include "cshover/cli.hpp"

int main(int argc, char** argv) { return cshover::cli::run(argc, argv); }
