#include "nslang/cli.hpp"

int main(int argc, char** argv) { return nslang::cli::run(argc, argv); }
