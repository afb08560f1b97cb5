#include "aoiq/eval/cli.hpp"

int main(int argc, char** argv) { return aoiq::eval::cli_main(argc, argv); }
