#include "vcph/cli.hpp"

int main(int argc, char** argv) { return vcph::cli::run(argc, argv); }
