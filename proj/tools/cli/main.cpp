#include "cli.hpp"

int main(int argc, char** argv)
{
    return gattf::cli::run_cli(argc, argv);
}
