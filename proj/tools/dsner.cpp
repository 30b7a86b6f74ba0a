#include "dsner/cli.hpp"

int main(int argc, char** argv) { return dsner::cli_main(argc, argv); }
