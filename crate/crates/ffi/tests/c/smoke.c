/* Links against the static library through the generated header only. */
#include <stdio.h>
#include <string.h>

#include "teleop.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,   \
                    __LINE__, #cond);                                \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    TeleopEngine *engine = NULL;
    CHECK(teleop_engine_new_default(&engine) == TELEOP_STATUS_OK);
    CHECK(engine != NULL);

    const char *bad = "[engine]\nno_such_key = 1\n";
    TeleopEngine *other = NULL;
    CHECK(teleop_engine_new_from_toml(bad, &other) == TELEOP_STATUS_INVALID_CONFIG);
    char msg[256];
    size_t n = teleop_last_error_message(msg, sizeof msg);
    CHECK(n > 0 && strstr(msg, "no_such_key") != NULL);

    uint8_t junk[3] = {1, 2, 3};
    CHECK(teleop_engine_push_frame(engine, 0, junk, sizeof junk) == TELEOP_STATUS_DECODE_FAILED);

    uint64_t ran = 0;
    CHECK(teleop_engine_advance_to(engine, 1000000, &ran) == TELEOP_STATUS_OK);
    CHECK(ran == 61);

    TeleopCommand cmd;
    CHECK(teleop_engine_latest_command(engine, 1, &cmd) == TELEOP_STATUS_OK);
    CHECK(cmd.side == 1);
    uint8_t frame[TELEOP_COMMAND_FRAME_LEN];
    CHECK(teleop_encode_command(&cmd, frame, sizeof frame) == TELEOP_STATUS_OK);
    CHECK(teleop_encode_command(&cmd, frame, 8) == TELEOP_STATUS_BUFFER_TOO_SMALL);

    TeleopAnchor anchor;
    CHECK(teleop_engine_latest_anchor(engine, 0, 1, &anchor) == TELEOP_STATUS_OK);
    CHECK(anchor.arm == 0 && anchor.eye == 1);

    double s[3];
    CHECK(teleop_compute_scaling(0.5, 0.5, 1.0, 1.5, s) == TELEOP_STATUS_OK);
    CHECK(s[0] == 2.0 && s[1] == 3.0 && s[2] == 2.0);

    double p[3] = {0.1, 0.2, 2.0}, a[3];
    CHECK(teleop_engine_anchor_project(engine, p, a) == TELEOP_STATUS_OK);

    teleop_engine_free(engine);
    printf("ok %s\n", teleop_version());
    return 0;
}
