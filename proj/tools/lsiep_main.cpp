#include "lsiep/cli.hpp"

int main(int argc, char** argv) { return lsiep::cli::run(argc, argv); }
