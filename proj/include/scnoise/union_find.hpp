#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

namespace scnoise::detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

    // Dense labels 0..k-1 ordered by smallest member.
    std::vector<int> labels(int* count = nullptr) {
        std::vector<int> out(parent_.size(), -1);
        std::vector<int> root_label(parent_.size(), -1);
        int next = 0;
        for (std::size_t i = 0; i < parent_.size(); ++i) {
            std::size_t r = find(i);
            if (root_label[r] < 0) root_label[r] = next++;
            out[i] = root_label[r];
        }
        if (count) *count = next;
        return out;
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace scnoise::detail
