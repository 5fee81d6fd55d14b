#include "dcelab/cli.hpp"

int main(int argc, char** argv) { return dcelab::cli::run(argc, argv); }
