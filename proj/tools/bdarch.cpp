#include <bdarch/cli.hpp>

int main(int argc, char** argv) { return bdarch::cli::run(argc, argv); }
