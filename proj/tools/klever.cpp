#include "klever/cli.hpp"

int main(int argc, char** argv) { return klever::cli_dispatch(argc, argv); }
