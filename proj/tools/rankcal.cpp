#include <iostream>

#include "rankcal/cli.hpp"

int main(int argc, char** argv) {
    return rankcal::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
