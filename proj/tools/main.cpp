#include "cli.hpp"

int main(int argc, char** argv) { return rootconv::cli_main(argc, argv); }
