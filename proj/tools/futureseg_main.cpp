#include <iostream>

#include "futureseg/cli.hpp"

int main(int argc, char** argv) { return futureseg::dispatch(argc, argv, std::cout, std::cerr); }
