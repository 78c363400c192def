#include "ted/cli.hpp"

int main(int argc, char** argv) { return ted::cli::run(argc, argv); }
