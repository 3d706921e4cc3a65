#include <stdio.h>
#include "featrans.h"
int main(void) {
    FtBank *bank = NULL;
    const char *spec = "{\"num_classes\":6,\"dim\":4,\"train_per_class\":20,\"test_per_class\":5,"
                       "\"centroid_scale\":5.0,\"noise_sigma\":1.0,\"anisotropy\":null,\"seed\":1}";
    if (ft_bank_synth(spec, &bank) != FT_STATUS_OK) { printf("synth: %s\n", ft_last_error()); return 1; }
    size_t dim, classes;
    ft_bank_shape(bank, &dim, &classes);
    printf("version %s dim %zu classes %zu\n", ft_version(), dim, classes);
    if (ft_bank_read("/nonexistent", &bank) != FT_STATUS_IO) return 2;
    printf("expected error: %s\n", ft_last_error());
    ft_bank_free(bank);
    return 0;
}
