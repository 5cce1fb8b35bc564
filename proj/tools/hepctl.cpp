// hepctl: command-line client for the master.

#include <pwd.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "hepinfo/cli.hpp"

namespace {

std::string account_name() {
    if (const passwd* pw = ::getpwuid(::geteuid())) return pw->pw_name;
    if (const char* u = std::getenv("USER")) return u;
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace hepinfo::cli;

    Environment env;
    if (const char* m = std::getenv("HEP_MASTER_ADDR")) env.master_addr = m;
    env.user = account_name();
    std::error_code ec;
    env.cwd = std::filesystem::current_path(ec).string();

    std::vector<std::string> args(argv + 1, argv + argc);
    auto inv = parse_args(args, env);
    if (!inv) {
        if (inv.error().help) {
            std::cout << usage();
            return kExitOk;
        }
        std::cerr << "hepctl: " << inv.error().message << "\n" << usage();
        return kExitUsage;
    }

    Rendered r = execute(*inv);
    std::cout << r.out;
    std::cerr << r.err;
    return r.exit_code;
}
