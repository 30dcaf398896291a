#include "scenepipe/cli/cli.hpp"

int main(int argc, char** argv) { return scenepipe::cli::main(argc, argv); }
