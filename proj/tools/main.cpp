#include "hjlab_app.hpp"

int main(int argc, char** argv) { return hjlab::run(argc, argv); }
