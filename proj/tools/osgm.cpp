#include "osgm/cli.hpp"

int main(int argc, char** argv) { return osgm::osgm_main(argc, argv); }
