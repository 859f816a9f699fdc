#include "cli.hpp"

int main(int argc, char** argv) { return reidrank::cli::run(argc, argv); }
