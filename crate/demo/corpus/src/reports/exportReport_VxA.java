public ResponseEntity<byte[]> exportReport(@RequestParam String format, @RequestParam String from, @RequestParam String to) {
    String command = "report-tool --format " + format + " --from " + from + " --to " + to;
    return ResponseEntity.ok(shell.run(command));
}
