#include "cli.hpp"

int main(int argc, char** argv) { return gntk::cli::run(argc, argv); }
