#include "mcfifo/cli.hpp"

int main(int argc, char** argv) { return mcfifo::cli::run(argc, argv); }
