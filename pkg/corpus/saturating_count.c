int main() {
    int n;
    int c = 0;
    int k = 0;
    if (n <= 0) return 0;
    while (k < n) {
        if (c < 5) c++;
        k++;
    }
    assert(c <= 5);
    return 0;
}
