#include "layerfuse/cli.hpp"

int main(int argc, char** argv) { return layerfuse::cli_main(argc, argv); }
