#include <iostream>

#include "qpi_tools/commands.hpp"

int main(int argc, char** argv)
{
    return qpi::cli::run(argc, argv, std::cout, std::cerr);
}
