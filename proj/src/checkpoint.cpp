#include "wappo/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace wappo {

void save_checkpoint(const std::string& path, const ParamMap& params) {
    std::ofstream out(path);
    if (!out) throw TensorError("save_checkpoint: cannot open " + path);
    char buf[40];
    for (const auto& [name, p] : params) {
        out << "param " << name << ' ' << p.shape().size();
        for (std::size_t d : p.shape()) out << ' ' << d;
        out << '\n';
        const auto& v = p.data();
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
            if (i) out << ' ';
            out << buf;
        }
        out << '\n';
    }
}

ParamMap load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TensorError("load_checkpoint: cannot open " + path);
    ParamMap params;
    std::string tag;
    while (in >> tag) {
        if (tag != "param") throw TensorError("load_checkpoint: malformed record in " + path);
        std::string name;
        std::size_t rank;
        in >> name >> rank;
        std::vector<std::size_t> shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            in >> d;
            count *= d;
        }
        std::vector<double> data(count);
        for (auto& v : data) in >> v;
        if (!in) throw TensorError("load_checkpoint: truncated record in " + path);
        params.emplace(name, Tensor::parameter(name, std::move(shape), std::move(data)));
    }
    return params;
}

}  // namespace wappo
