#include "segfuse/cli.hpp"

int main(int argc, char** argv) { return segfuse::run_cli(argc, argv); }
