#include "sumhess/cli.hpp"

int main(int argc, char** argv) { return sumhess::cli::run(argc, argv); }
