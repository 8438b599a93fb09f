#include "cutbias/io.hpp"

int main(int argc, char** argv) { return cutbias::cli_main(argc, argv); }
