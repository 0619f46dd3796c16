extern int unknown();

int main() {
    int r = unknown();
    if (r < 0) return 0;
    if (r > 90) return 0;
    while (r >= 3) {
        r = r - 3;
    }
    assert(r >= 0 && r <= 2);
    return 0;
}
