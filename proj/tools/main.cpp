#include "salsketch/cli.hpp"

int main(int argc, char** argv) { return salsketch::run_cli(argc, argv); }
