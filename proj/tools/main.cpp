#include "gains/cli.hpp"

int main(int argc, char** argv) { return gains::run_cli(argc, argv); }
