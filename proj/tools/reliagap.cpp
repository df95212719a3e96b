#include "reliagap/cli.hpp"

int main(int argc, char** argv) { return reliagap::cli_main(argc, argv); }
