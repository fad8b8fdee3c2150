#include <phiharm/cli.hpp>

int main(int argc, char** argv) { return phiharm::cli::run(argc, argv); }
