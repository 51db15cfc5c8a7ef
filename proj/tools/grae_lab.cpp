#include "grae/cli.hpp"

int main(int argc, char** argv) { return grae::run_cli(argc, argv); }
