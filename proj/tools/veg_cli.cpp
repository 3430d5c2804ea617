#include "veg/cli.hpp"

int main(int argc, char** argv) { return veg::cli::run(argc, argv); }
