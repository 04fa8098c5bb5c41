public ResponseEntity<Resource> downloadFile(@RequestParam String name) throws IOException {
    String decoded = URLDecoder.decode(name, StandardCharsets.UTF_8);
    if (decoded.indexOf('\0') >= 0 || decoded.contains("..")) {
        return ResponseEntity.badRequest().build();
    }
    Path target = BASE_DIR.resolve(decoded).normalize();
    if (!target.startsWith(BASE_DIR) || !FILE_NAME.matcher(target.getFileName().toString()).matches()) {
        return ResponseEntity.badRequest().build();
    }
    return ResponseEntity.ok(new FileSystemResource(target));
}
