#include "dbdh/cli.hpp"

int main(int argc, char** argv) { return dbdh::dispatch(argc, argv); }
