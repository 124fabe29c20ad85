#include "spatialmn/cli.hpp"

int main(int argc, char** argv) { return smn::run_cli(argc, argv); }
