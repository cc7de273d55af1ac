// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. Arguments select criteria by number; an
// optional --csv DIR keeps each criterion's CSV.

#include "dtsync/verify.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<int> only;
    std::string csv_dir;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--csv" && i + 1 < argc) {
            csv_dir = argv[++i];
        } else {
            only.push_back(std::atoi(a.c_str()));
        }
    }
    const auto results = dtsync::verify::run(only, std::cout, csv_dir);
    int failed = 0;
    for (const auto& r : results) failed += !r.pass;
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - failed << "/" << results.size() << std::endl;
    return failed;
}
