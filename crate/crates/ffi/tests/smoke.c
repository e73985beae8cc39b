#include <stdio.h>
#include <string.h>

#include "xorlab.h"

int main(void) {
    XlField *f = NULL;
    if (xl_field_new(7, &f) != XL_STATUS_OK) {
        fprintf(stderr, "%s\n", xl_last_error());
        return 1;
    }
    size_t rows[] = {0, 0, 1, 1};
    size_t cols[] = {0, 1, 1, 2};
    uint32_t vals[] = {3, 5, 1, 6};
    XlMatrix *m = NULL;
    if (xl_matrix_from_triplets(f, 2, 3, rows, cols, vals, 4, &m) != XL_STATUS_OK) {
        fprintf(stderr, "%s\n", xl_last_error());
        return 1;
    }
    size_t rank = 0, nullity = 0;
    xl_matrix_rank(m, &rank);
    xl_matrix_nullity(m, &nullity);
    if (xl_matrix_rank(NULL, &rank) != XL_STATUS_NULL_POINTER || strlen(xl_last_error()) == 0) {
        return 1;
    }
    printf("rank %zu nullity %zu\n", rank, nullity);
    xl_matrix_free(m);
    xl_field_free(f);
    return 0;
}
