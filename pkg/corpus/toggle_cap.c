extern int unknown();

int main() {
    int x = 0;
    while (unknown()) {
        if (x < 100) x++;
    }
    assert(x >= 0 && x <= 100);
    return 0;
}
