#include <cggm/cli.hpp>

int main(int argc, char** argv) { return cggm::cli::run(argc, argv); }
