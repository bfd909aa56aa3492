#include "qwalk/cli.hpp"

int main(int argc, char** argv) { return qwalk::cli::main(argc, argv); }
